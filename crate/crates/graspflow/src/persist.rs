//! On-disk formats: depth images, checkpoints, the paired dataset, and
//! evaluation reports.
//!
//! Binary formats are little-endian with a four-byte magic and a version
//! word; readers reject unknown magics and versions. Text formats are
//! line-oriented `key=value` so diffs stay readable.

use crate::encoder::DepthImage;
use crate::error::{Error, Result};
use crate::eval::{MethodTag, SplitTag, SuccessTable, CATEGORIES};
use crate::nn::Mlp;
use crate::pose::{GraspPose, PoseVec7};
use crate::scene::{PairedGrasp, SceneSpec, Shape};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

pub const IMAGE_MAGIC: &[u8; 4] = b"DIMG";
pub const IMAGE_VERSION: u32 = 1;
pub const CKPT_MAGIC: &[u8; 4] = b"CFMG";
pub const CKPT_VERSION: u32 = 1;
pub const DATASET_HEADER: &str = "GFDS 1";

fn read_exact4(r: &mut dyn Read) -> Result<[u8; 4]> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32(r: &mut dyn Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact4(r)?))
}

fn read_u64(r: &mut dyn Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u8(r: &mut dyn Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

// ---------------------------------------------------------------- images

pub fn write_depth_image(img: &DepthImage, w: &mut dyn Write) -> Result<()> {
    w.write_all(IMAGE_MAGIC)?;
    w.write_all(&IMAGE_VERSION.to_le_bytes())?;
    w.write_all(&img.width.to_le_bytes())?;
    w.write_all(&img.height.to_le_bytes())?;
    for v in &img.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_depth_image(r: &mut dyn Read) -> Result<DepthImage> {
    if &read_exact4(r)? != IMAGE_MAGIC {
        return Err(Error::Data("not a depth image file".into()));
    }
    let version = read_u32(r)?;
    if version != IMAGE_VERSION {
        return Err(Error::Data(format!(
            "unsupported depth image version {version}"
        )));
    }
    let width = read_u32(r)?;
    let height = read_u32(r)?;
    let n = (width as usize)
        .checked_mul(height as usize)
        .ok_or_else(|| Error::Data("image dimensions overflow".into()))?;
    if n == 0 || n > (1 << 24) {
        return Err(Error::Data(format!("bad image dimensions {width}x{height}")));
    }
    let mut data = Vec::with_capacity(n);
    for _ in 0..n {
        data.push(f32::from_le_bytes(read_exact4(r)?));
    }
    // must be at EOF
    let mut extra = [0u8; 1];
    match r.read(&mut extra)? {
        0 => Ok(DepthImage {
            width,
            height,
            data,
        }),
        _ => Err(Error::Data("trailing bytes after image payload".into())),
    }
}

pub fn save_depth_image(img: &DepthImage, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_depth_image(img, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_depth_image(path: &Path) -> Result<DepthImage> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_depth_image(&mut f)
}

// ------------------------------------------------------------ checkpoints

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkptKind {
    Autoencoder,
    Velocity,
}

impl CkptKind {
    fn tag(&self) -> u8 {
        match self {
            CkptKind::Autoencoder => 0,
            CkptKind::Velocity => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(CkptKind::Autoencoder),
            1 => Ok(CkptKind::Velocity),
            _ => Err(Error::Data(format!("unknown checkpoint kind {t}"))),
        }
    }
}

/// A loaded checkpoint: network weights plus run metadata.
pub struct Checkpoint {
    pub kind: CkptKind,
    pub mlp: Mlp,
    pub metadata: BTreeMap<String, String>,
}

/// Serialize a network. The architecture descriptor travels with the
/// weights, so a reader can rebuild the layer stack before loading them.
/// Optimizer state is not persisted (flag reserved in the layout).
pub fn write_checkpoint(
    kind: CkptKind,
    mlp: &Mlp,
    metadata: &BTreeMap<String, String>,
    w: &mut dyn Write,
) -> Result<()> {
    w.write_all(CKPT_MAGIC)?;
    w.write_all(&CKPT_VERSION.to_le_bytes())?;
    w.write_all(&[kind.tag()])?;
    let specs = mlp.specs();
    w.write_all(&(specs.len() as u32).to_le_bytes())?;
    for s in &specs {
        w.write_all(&(s.input as u32).to_le_bytes())?;
        w.write_all(&(s.output as u32).to_le_bytes())?;
        w.write_all(&[s.bn as u8, s.act.tag()])?;
    }
    w.write_all(&[0u8])?; // no optimizer state
    let mut meta = String::new();
    for (k, v) in metadata {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Usage(format!("invalid metadata key/value {k:?}")));
        }
        meta.push_str(k);
        meta.push('=');
        meta.push_str(v);
        meta.push('\n');
    }
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(meta.as_bytes())?;
    let blob = mlp.state_blob();
    w.write_all(&(blob.len() as u64).to_le_bytes())?;
    for v in &blob {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut dyn Read) -> Result<Checkpoint> {
    if &read_exact4(r)? != CKPT_MAGIC {
        return Err(Error::Data("not a checkpoint file".into()));
    }
    let version = read_u32(r)?;
    if version != CKPT_VERSION {
        return Err(Error::Data(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let kind = CkptKind::from_tag(read_u8(r)?)?;
    let n_blocks = read_u32(r)? as usize;
    if n_blocks == 0 || n_blocks > 64 {
        return Err(Error::Data(format!("implausible block count {n_blocks}")));
    }
    let mut specs = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let input = read_u32(r)? as usize;
        let output = read_u32(r)? as usize;
        let bn = read_u8(r)?;
        if bn > 1 {
            return Err(Error::Data(format!("bad batchnorm flag {bn}")));
        }
        let act = crate::nn::Activation::from_tag(read_u8(r)?)?;
        specs.push(crate::nn::BlockSpec {
            input,
            output,
            bn: bn == 1,
            act,
        });
    }
    let opt = read_u8(r)?;
    if opt != 0 {
        return Err(Error::Data("optimizer state payload not supported".into()));
    }
    let meta_len = read_u32(r)? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes)?;
    let meta_text = String::from_utf8(meta_bytes)
        .map_err(|_| Error::Data("checkpoint metadata is not utf-8".into()))?;
    let metadata = parse_kv(&meta_text)?;
    let blob_len = read_u64(r)? as usize;
    let mut blob = Vec::with_capacity(blob_len);
    let mut b = [0u8; 8];
    for _ in 0..blob_len {
        r.read_exact(&mut b)?;
        blob.push(f64::from_le_bytes(b));
    }
    let mut mlp = Mlp::new(&specs);
    mlp.load_blob(&blob)?;
    Ok(Checkpoint {
        kind,
        mlp,
        metadata,
    })
}

pub fn save_checkpoint(
    kind: CkptKind,
    mlp: &Mlp,
    metadata: &BTreeMap<String, String>,
    path: &Path,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(kind, mlp, metadata, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_checkpoint(&mut f)
}

// ---------------------------------------------------------------- kv text

/// Parse `key=value` lines. Blank lines and `#` comments are skipped;
/// duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Data(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
        })?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Data(format!("duplicate key {k:?}")));
        }
    }
    Ok(out)
}

pub fn format_kv(map: &BTreeMap<String, String>) -> String {
    let mut s = String::new();
    for (k, v) in map {
        s.push_str(k);
        s.push('=');
        s.push_str(v);
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------- dataset

fn shape_fields(shape: &Shape) -> String {
    match shape {
        Shape::Cylinder { radius, height } => format!("cylinder {radius} {height}"),
        Shape::Sphere { radius } => format!("sphere {radius}"),
        Shape::Box3 { x, y, z } => format!("box {x} {y} {z}"),
        Shape::Flat { x, y, thickness } => format!("flat {x} {y} {thickness}"),
    }
}

fn parse_shape(tokens: &mut std::slice::Iter<'_, &str>) -> Result<Shape> {
    let kind = next_tok(tokens)?;
    Ok(match kind {
        "cylinder" => Shape::Cylinder {
            radius: parse_f64(tokens)?,
            height: parse_f64(tokens)?,
        },
        "sphere" => Shape::Sphere {
            radius: parse_f64(tokens)?,
        },
        "box" => Shape::Box3 {
            x: parse_f64(tokens)?,
            y: parse_f64(tokens)?,
            z: parse_f64(tokens)?,
        },
        "flat" => Shape::Flat {
            x: parse_f64(tokens)?,
            y: parse_f64(tokens)?,
            thickness: parse_f64(tokens)?,
        },
        other => return Err(Error::Data(format!("unknown shape {other:?}"))),
    })
}

fn next_tok<'a>(tokens: &mut std::slice::Iter<'_, &'a str>) -> Result<&'a str> {
    tokens
        .next()
        .copied()
        .ok_or_else(|| Error::Data("truncated dataset record".into()))
}

fn parse_f64(tokens: &mut std::slice::Iter<'_, &str>) -> Result<f64> {
    let s = next_tok(tokens)?;
    s.parse::<f64>()
        .map_err(|e| Error::Data(format!("bad float {s:?}: {e}")))
}

fn parse_u64(tokens: &mut std::slice::Iter<'_, &str>) -> Result<u64> {
    let s = next_tok(tokens)?;
    s.parse::<u64>()
        .map_err(|e| Error::Data(format!("bad integer {s:?}: {e}")))
}

fn pose_fields(v: &PoseVec7) -> String {
    v.0.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_pose(tokens: &mut std::slice::Iter<'_, &str>) -> Result<PoseVec7> {
    let mut v = [0.0; 7];
    for slot in &mut v {
        *slot = parse_f64(tokens)?;
    }
    Ok(PoseVec7(v))
}

/// One paired record per line:
/// `<shape...> <x> <y> <yaw> <recess> <seed> <rank> <depth_offset> <rigid 7> <soft 7>`.
/// Floats print in shortest round-trip form, so write/read is lossless.
pub fn write_dataset(pairs: &[PairedGrasp], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{DATASET_HEADER}")?;
    writeln!(w, "# pairs={}", pairs.len())?;
    for p in pairs {
        writeln!(
            w,
            "{} {} {} {} {} {} {} {} {} {}",
            shape_fields(&p.scene.shape),
            p.scene.position[0],
            p.scene.position[1],
            p.scene.yaw,
            p.scene.recess,
            p.scene.seed,
            p.rank,
            p.depth_offset,
            pose_fields(&crate::pose::to_vec7(&p.g_rigid)),
            pose_fields(&crate::pose::to_vec7(&p.g_soft)),
        )?;
    }
    Ok(())
}

pub fn read_dataset(text: &str) -> Result<Vec<PairedGrasp>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty dataset file".into()))?;
    if header != DATASET_HEADER {
        return Err(Error::Data(format!("bad dataset header {header:?}")));
    }
    let mut out = Vec::new();
    for raw in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let mut it = toks.iter();
        let shape = parse_shape(&mut it)?;
        let scene = SceneSpec {
            shape,
            position: [parse_f64(&mut it)?, parse_f64(&mut it)?],
            yaw: parse_f64(&mut it)?,
            recess: parse_f64(&mut it)?,
            seed: parse_u64(&mut it)?,
        };
        scene.validate()?;
        let rank = parse_u64(&mut it)? as u32;
        let depth_offset = parse_f64(&mut it)?;
        let rigid = parse_pose(&mut it)?;
        let soft = parse_pose(&mut it)?;
        if it.next().is_some() {
            return Err(Error::Data("trailing tokens in dataset record".into()));
        }
        out.push(PairedGrasp {
            g_rigid: pose_from_vec(&rigid)?,
            g_soft: pose_from_vec(&soft)?,
            scene,
            rank,
            depth_offset,
        });
    }
    Ok(out)
}

fn pose_from_vec(v: &PoseVec7) -> Result<GraspPose> {
    let g = crate::pose::from_vec7(v, crate::scene::GRIPPER_WIDTH);
    if !g.orientation.iter().all(|x| x.is_finite()) || !g.position.iter().all(|x| x.is_finite()) {
        return Err(Error::Data("non-finite pose in dataset".into()));
    }
    Ok(g)
}

pub fn save_dataset(pairs: &[PairedGrasp], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(pairs, &mut f)?;
    f.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<PairedGrasp>> {
    read_dataset(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- reports

/// Human-readable success table.
pub fn format_report(table: &SuccessTable) -> String {
    let mut s = String::new();
    s.push_str("success rates by category and split\n");
    s.push_str(&format!(
        "{:<10} {:<8} {:>10} {:>10} {:>8}\n",
        "category", "split", "baseline", "cfm", "trials"
    ));
    for c in CATEGORIES {
        for split in [SplitTag::Seen, SplitTag::Unseen] {
            let b = table.cell(c, split, MethodTag::Baseline);
            let f = table.cell(c, split, MethodTag::Cfm);
            if b.trials == 0 && f.trials == 0 {
                continue;
            }
            s.push_str(&format!(
                "{:<10} {:<8} {:>9.1}% {:>9.1}% {:>8}\n",
                c,
                split.as_str(),
                100.0 * b.rate(),
                100.0 * f.rate(),
                f.trials
            ));
        }
    }
    for split in [SplitTag::Seen, SplitTag::Unseen] {
        let b = table.overall(split, MethodTag::Baseline);
        let f = table.overall(split, MethodTag::Cfm);
        if f.trials == 0 {
            continue;
        }
        s.push_str(&format!(
            "{:<10} {:<8} {:>9.1}% {:>9.1}% {:>8}\n",
            "overall",
            split.as_str(),
            100.0 * b.rate(),
            100.0 * f.rate(),
            f.trials
        ));
    }
    s
}

/// Machine-readable TSV mirror of the report.
pub fn format_report_tsv(table: &SuccessTable) -> String {
    let mut s = String::from("category\tsplit\tmethod\ttrials\tsuccesses\trate\n");
    for c in CATEGORIES {
        for split in [SplitTag::Seen, SplitTag::Unseen] {
            for method in [MethodTag::Baseline, MethodTag::Cfm] {
                let cell = table.cell(c, split, method);
                s.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    c,
                    split.as_str(),
                    method.as_str(),
                    cell.trials,
                    cell.successes,
                    cell.rate()
                ));
            }
        }
    }
    s
}

pub fn parse_report_tsv(text: &str) -> Result<SuccessTable> {
    let mut table = SuccessTable::default();
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty report".into()))?;
    if header != "category\tsplit\tmethod\ttrials\tsuccesses\trate" {
        return Err(Error::Data("bad report header".into()));
    }
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(Error::Data(format!("bad report row {line:?}")));
        }
        let split = match cols[1] {
            "seen" => SplitTag::Seen,
            "unseen" => SplitTag::Unseen,
            other => return Err(Error::Data(format!("bad split {other:?}"))),
        };
        let method = match cols[2] {
            "baseline" => MethodTag::Baseline,
            "cfm" => MethodTag::Cfm,
            other => return Err(Error::Data(format!("bad method {other:?}"))),
        };
        let trials: usize = cols[3]
            .parse()
            .map_err(|_| Error::Data("bad trial count".into()))?;
        let successes: usize = cols[4]
            .parse()
            .map_err(|_| Error::Data("bad success count".into()))?;
        if successes > trials {
            return Err(Error::Data("successes exceed trials".into()));
        }
        for _ in 0..successes {
            table.record(cols[0], split, method, true);
        }
        for _ in 0..trials - successes {
            table.record(cols[0], split, method, false);
        }
    }
    Ok(table)
}

/// Per-epoch loss history as TSV.
pub fn format_loss_history(train: &[f64], val: &[f64]) -> String {
    let mut s = String::from("epoch\ttrain_loss\tval_loss\n");
    for (i, t) in train.iter().enumerate() {
        let v = val
            .get(i)
            .map(|v| v.to_string())
            .unwrap_or_else(|| "nan".into());
        s.push_str(&format!("{}\t{}\t{}\n", i, t, v));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, BlockSpec};
    use crate::rng::Rng;
    use crate::scene::{generate_dataset, seen_templates};

    #[test]
    fn depth_image_round_trip_bitwise() {
        let img = DepthImage {
            width: 4,
            height: 3,
            data: vec![
                0.5, 0.25, 0.125, 0.4999999, 0.0, 1.0, 0.3333333, 0.1, 0.2, 0.7, 0.9, 0.42,
            ],
        };
        let mut buf = Vec::new();
        write_depth_image(&img, &mut buf).unwrap();
        let back = read_depth_image(&mut buf.as_slice()).unwrap();
        assert_eq!(back.width, 4);
        assert_eq!(back.height, 3);
        for (a, b) in img.data.iter().zip(&back.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // and the serialized bytes themselves are stable
        let mut buf2 = Vec::new();
        write_depth_image(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn depth_image_rejects_bad_magic_and_version() {
        let img = DepthImage {
            width: 1,
            height: 1,
            data: vec![0.1],
        };
        let mut buf = Vec::new();
        write_depth_image(&img, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_depth_image(&mut bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[4] = 99;
        assert!(read_depth_image(&mut bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad.push(0);
        assert!(read_depth_image(&mut bad.as_slice()).is_err());
        assert!(read_depth_image(&mut buf[..10].as_ref()).is_err());
    }

    fn small_mlp() -> Mlp {
        let specs = [
            BlockSpec {
                input: 3,
                output: 5,
                bn: true,
                act: Activation::Silu,
            },
            BlockSpec {
                input: 5,
                output: 2,
                bn: false,
                act: Activation::Identity,
            },
        ];
        let mut rng = Rng::seeded(9);
        let mut mlp = Mlp::new(&specs);
        mlp.init(&mut rng);
        mlp
    }

    #[test]
    fn checkpoint_round_trip_bitwise() {
        let mlp = small_mlp();
        let mut meta = BTreeMap::new();
        meta.insert("epochs".into(), "12".into());
        meta.insert("seed".into(), "7".into());
        let mut buf = Vec::new();
        write_checkpoint(CkptKind::Velocity, &mlp, &meta, &mut buf).unwrap();
        let ck = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(ck.kind, CkptKind::Velocity);
        assert_eq!(ck.metadata, meta);
        let a = mlp.state_blob();
        let b = ck.mlp.state_blob();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        // re-serialization is byte-identical
        let mut buf2 = Vec::new();
        write_checkpoint(ck.kind, &ck.mlp, &ck.metadata, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let mlp = small_mlp();
        let meta = BTreeMap::new();
        let mut buf = Vec::new();
        write_checkpoint(CkptKind::Autoencoder, &mlp, &meta, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[1] = b'Z';
        assert!(read_checkpoint(&mut bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[4] = 77;
        assert!(read_checkpoint(&mut bad.as_slice()).is_err());
        let n = buf.len();
        assert!(read_checkpoint(&mut buf[..n - 8].as_ref()).is_err());
    }

    #[test]
    fn kv_parse_and_format() {
        let text = "# comment\n\nalpha=1.5\n beta = two words \n";
        let map = parse_kv(text).unwrap();
        assert_eq!(map["alpha"], "1.5");
        assert_eq!(map["beta"], "two words");
        let back = parse_kv(&format_kv(&map)).unwrap();
        assert_eq!(back, map);
        assert!(parse_kv("novalue\n").is_err());
        assert!(parse_kv("a=1\na=2\n").is_err());
    }

    #[test]
    fn dataset_round_trip_exact() {
        let (pairs, _) = generate_dataset(&seen_templates(), 3, 11).unwrap();
        let mut buf = Vec::new();
        write_dataset(&pairs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back = read_dataset(&text).unwrap();
        assert_eq!(back.len(), pairs.len());
        for (a, b) in pairs.iter().zip(&back) {
            assert_eq!(a.scene, b.scene);
            assert_eq!(a.rank, b.rank);
            assert_eq!(a.depth_offset, b.depth_offset);
            assert_eq!(crate::pose::to_vec7(&a.g_rigid), crate::pose::to_vec7(&b.g_rigid));
            assert_eq!(crate::pose::to_vec7(&a.g_soft), crate::pose::to_vec7(&b.g_soft));
        }
    }

    #[test]
    fn dataset_rejects_malformed() {
        assert!(read_dataset("").is_err());
        assert!(read_dataset("WRONG 9\n").is_err());
        assert!(read_dataset(&format!("{DATASET_HEADER}\ncylinder 0.03\n")).is_err());
        assert!(read_dataset(&format!(
            "{DATASET_HEADER}\npyramid 0.03 0.1 0 0 0 0 1 0.02 1 0 0 0 0 0 0.05 1 0 0 0 0 0 0.05\n"
        ))
        .is_err());
    }

    #[test]
    fn report_tsv_round_trip() {
        let mut table = SuccessTable::default();
        let mut flip = false;
        for c in CATEGORIES {
            for split in [SplitTag::Seen, SplitTag::Unseen] {
                for method in [MethodTag::Baseline, MethodTag::Cfm] {
                    for _ in 0..5 {
                        table.record(c, split, method, flip);
                        flip = !flip;
                    }
                }
            }
        }
        let tsv = format_report_tsv(&table);
        let back = parse_report_tsv(&tsv).unwrap();
        assert_eq!(back, table);
        let text = format_report(&table);
        assert!(text.contains("overall"));
        assert!(text.contains("cylinder"));
    }
}
