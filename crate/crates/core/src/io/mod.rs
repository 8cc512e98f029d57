//! On-disk formats: binary clouds and flows, scene sample directories,
//! distance-grid dumps, and the plain-text run configuration.
//!
//! Clouds store 32-bit floats (lidar precision); internal math stays 64-bit.
//! Layouts are pinned by golden-file tests so independent implementations
//! interoperate.

mod config;

pub use config::{parse_run_config, read_run_config, RunConfig};

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cloud::{FlowField, PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::loss::DistanceGrid;
use crate::synth::{SceneSample, SceneSpec};

const CLOUD_MAGIC: [u8; 4] = *b"PCF1";
const FLOW_MAGIC: [u8; 4] = *b"FLW1";
const GRID_MAGIC: [u8; 4] = *b"DTG1";

fn write_vectors(path: &Path, magic: [u8; 4], vecs: &[Vec3]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    w.write_all(&magic).map_err(io_err)?;
    w.write_all(&(vecs.len() as u32).to_le_bytes()).map_err(io_err)?;
    for v in vecs {
        for c in v {
            w.write_all(&(*c as f32).to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

fn read_vectors(path: &Path, magic: [u8; 4]) -> Result<Vec<Vec3>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(io_err)?;
    if found != magic {
        return Err(Error::BadMagic {
            expected: magic,
            found,
        });
    }
    let mut cnt = [0u8; 4];
    r.read_exact(&mut cnt).map_err(io_err)?;
    let count = u32::from_le_bytes(cnt) as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(io_err)?;
    let expected = count * 12;
    if payload.len() < expected {
        return Err(Error::TruncatedFile {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::CountMismatch {
            header: count,
            payload: payload.len() / 12,
        });
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut v = [0.0f64; 3];
        for (a, slot) in v.iter_mut().enumerate() {
            let off = i * 12 + a * 4;
            let bits = f32::from_le_bytes(payload[off..off + 4].try_into().unwrap());
            if !bits.is_finite() {
                return Err(Error::NonFiniteValue);
            }
            *slot = bits as f64;
        }
        out.push(v);
    }
    Ok(out)
}

/// Writes a cloud as `PCF1` (u32 LE count, then count x 3 f32 LE).
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    write_vectors(path, CLOUD_MAGIC, cloud.points())
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    PointCloud::new(read_vectors(path, CLOUD_MAGIC)?)
}

/// Writes a flow with the cloud payload layout under the `FLW1` magic, so a
/// flow file can never be mistaken for a cloud.
pub fn write_flow(path: &Path, flow: &FlowField) -> Result<()> {
    if flow.is_empty() {
        return Err(Error::EmptyFlow);
    }
    write_vectors(path, FLOW_MAGIC, flow.vectors())
}

pub fn read_flow(path: &Path) -> Result<FlowField> {
    FlowField::new(read_vectors(path, FLOW_MAGIC)?)
}

/// Distance-grid dump: `DTG1`, origin 3 x f64 LE, cell f64 LE, dims 3 x u32 LE,
/// then values as f32 LE in x-fastest order. Debugging aid.
pub fn write_grid(path: &Path, grid: &DistanceGrid) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    w.write_all(&GRID_MAGIC).map_err(io_err)?;
    for c in grid.origin() {
        w.write_all(&c.to_le_bytes()).map_err(io_err)?;
    }
    w.write_all(&grid.cell().to_le_bytes()).map_err(io_err)?;
    for d in grid.dims() {
        w.write_all(&(d as u32).to_le_bytes()).map_err(io_err)?;
    }
    for v in grid.values() {
        w.write_all(&(*v as f32).to_le_bytes()).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reads a grid dump back as `(origin, cell, dims, values)`.
pub fn read_grid(path: &Path) -> Result<(Vec3, f64, [usize; 3], Vec<f32>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let io_err = |e| Error::io(path.display().to_string(), e);
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(io_err)?;
    if found != GRID_MAGIC {
        return Err(Error::BadMagic {
            expected: GRID_MAGIC,
            found,
        });
    }
    let mut f64buf = [0u8; 8];
    let mut origin = [0.0f64; 3];
    for o in origin.iter_mut() {
        r.read_exact(&mut f64buf).map_err(io_err)?;
        *o = f64::from_le_bytes(f64buf);
    }
    r.read_exact(&mut f64buf).map_err(io_err)?;
    let cell = f64::from_le_bytes(f64buf);
    let mut dims = [0usize; 3];
    let mut u32buf = [0u8; 4];
    for d in dims.iter_mut() {
        r.read_exact(&mut u32buf).map_err(io_err)?;
        *d = u32::from_le_bytes(u32buf) as usize;
    }
    let total = dims[0] * dims[1] * dims[2];
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        r.read_exact(&mut u32buf).map_err(io_err)?;
        values.push(f32::from_le_bytes(u32buf));
    }
    Ok((origin, cell, dims, values))
}

/// Writes a sample directory: `frame_0.pcf .. frame_{m-1}.pcf`, `gt_flow.pcf`,
/// and `meta.txt` echoing the scene spec.
pub fn write_sample(dir: &Path, sample: &SceneSample) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    for (i, frame) in sample.frames.iter().enumerate() {
        write_cloud(&dir.join(format!("frame_{i}.pcf")), frame)?;
    }
    write_flow(&dir.join("gt_flow.pcf"), &sample.gt_flow)?;
    let meta = config::scene_meta_text(&sample.spec);
    let meta_path = dir.join("meta.txt");
    fs::write(&meta_path, meta).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    Ok(())
}

/// Reads a sample directory written by [`write_sample`].
pub fn read_sample(dir: &Path) -> Result<SceneSample> {
    let meta_path = dir.join("meta.txt");
    if !meta_path.exists() {
        return Err(Error::MissingFrame("meta.txt".into()));
    }
    let text = fs::read_to_string(&meta_path)
        .map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    let spec = config::parse_scene_meta(&text)?;
    let m = spec.frames;
    let mut frames = Vec::with_capacity(m);
    for i in 0..m {
        let p = dir.join(format!("frame_{i}.pcf"));
        if !p.exists() {
            return Err(Error::MissingFrame(format!("frame_{i}.pcf")));
        }
        frames.push(read_cloud(&p)?);
    }
    let flow_path = dir.join("gt_flow.pcf");
    if !flow_path.exists() {
        return Err(Error::MissingFrame("gt_flow.pcf".into()));
    }
    let gt_flow = read_flow(&flow_path)?;
    let anchor = frames[m - 2].len();
    if gt_flow.len() != anchor {
        return Err(Error::FlowSizeMismatch {
            flow: gt_flow.len(),
            frame: anchor,
        });
    }
    Ok(SceneSample {
        frames,
        gt_flow,
        actors: None,
        spec,
    })
}

/// Scene spec metadata text, identical to the `meta.txt` payload.
pub fn scene_meta_text(spec: &SceneSpec) -> String {
    config::scene_meta_text(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Aabb;
    use crate::rng::Rng;
    use crate::synth::generate;

    #[test]
    fn cloud_round_trip_under_f32_rounding() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pcf");
        let mut rng = Rng::new(1);
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| {
                [
                    rng.uniform_in(-50.0, 50.0),
                    rng.uniform_in(-50.0, 50.0),
                    rng.uniform_in(-5.0, 5.0),
                ]
            })
            .collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        write_cloud(&path, &cloud).unwrap();
        let back = read_cloud(&path).unwrap();
        for (orig, got) in pts.iter().zip(back.points()) {
            for a in 0..3 {
                assert_eq!(got[a], orig[a] as f32 as f64);
            }
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pcf");
        fs::write(&path, b"XXXX\x01\x00\x00\x00aaaabbbbcccc").unwrap();
        assert!(matches!(read_cloud(&path), Err(Error::BadMagic { .. })));
        // A flow file is not a cloud file.
        let fpath = dir.path().join("f.pcf");
        write_flow(&fpath, &FlowField::new(vec![[1.0, 2.0, 3.0]]).unwrap()).unwrap();
        assert!(matches!(read_cloud(&fpath), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.pcf");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"PCF1");
        bytes.extend_from_slice(&10u32.to_le_bytes());
        // Only 9 points of payload.
        bytes.extend_from_slice(&vec![0u8; 9 * 12]);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            read_cloud(&path),
            Err(Error::TruncatedFile {
                expected: 120,
                found: 108
            })
        ));
    }

    #[test]
    fn oversized_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.pcf");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"PCF1");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&vec![0u8; 2 * 12]);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_cloud(&path), Err(Error::CountMismatch { .. })));
    }

    #[test]
    fn non_finite_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.pcf");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"PCF1");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&2.0f32.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(read_cloud(&path), Err(Error::NonFiniteValue)));
    }

    #[test]
    fn sample_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = crate::synth::SceneSpec {
            counts: vec![200],
            ..Default::default()
        };
        let sample = generate(&spec, &mut Rng::new(3)).unwrap();
        let sdir = dir.path().join("sample_0000");
        write_sample(&sdir, &sample).unwrap();
        let back = read_sample(&sdir).unwrap();
        assert_eq!(back.frames.len(), sample.frames.len());
        for (a, b) in sample.frames.iter().zip(&back.frames) {
            assert_eq!(a.len(), b.len());
            for (pa, pb) in a.points().iter().zip(b.points()) {
                for ax in 0..3 {
                    assert_eq!(pb[ax], pa[ax] as f32 as f64);
                }
            }
        }
        assert_eq!(back.gt_flow.len(), sample.gt_flow.len());
        assert_eq!(back.spec, sample.spec);
    }

    #[test]
    fn missing_gt_flow_named() {
        let dir = tempfile::tempdir().unwrap();
        let spec = crate::synth::SceneSpec {
            counts: vec![100],
            ..Default::default()
        };
        let sample = generate(&spec, &mut Rng::new(4)).unwrap();
        let sdir = dir.path().join("s");
        write_sample(&sdir, &sample).unwrap();
        fs::remove_file(sdir.join("gt_flow.pcf")).unwrap();
        match read_sample(&sdir) {
            Err(Error::MissingFrame(name)) => assert_eq!(name, "gt_flow.pcf"),
            other => panic!("expected MissingFrame, got {other:?}"),
        }
    }

    #[test]
    fn gt_size_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let spec = crate::synth::SceneSpec {
            counts: vec![100],
            dropout: 0.0,
            ..Default::default()
        };
        let sample = generate(&spec, &mut Rng::new(5)).unwrap();
        let sdir = dir.path().join("s");
        write_sample(&sdir, &sample).unwrap();
        // Overwrite the flow with a wrong-sized one.
        write_flow(
            &sdir.join("gt_flow.pcf"),
            &FlowField::new(vec![[0.0; 3]; 7]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            read_sample(&sdir),
            Err(Error::FlowSizeMismatch { flow: 7, frame: 100 })
        ));
    }

    #[test]
    fn golden_bytes_cloud_flow_grid() {
        // Byte-level layout pins: independent implementations must be able to
        // produce these exact files.
        let dir = tempfile::tempdir().unwrap();

        let cpath = dir.path().join("g.pcf");
        let cloud = PointCloud::new(vec![[1.0, 2.0, 3.0], [-0.5, 0.25, -4.0]]).unwrap();
        write_cloud(&cpath, &cloud).unwrap();
        let mut expect = Vec::new();
        expect.extend_from_slice(b"PCF1");
        expect.extend_from_slice(&2u32.to_le_bytes());
        for v in [1.0f32, 2.0, 3.0, -0.5, 0.25, -4.0] {
            expect.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(fs::read(&cpath).unwrap(), expect);

        let fpath = dir.path().join("g.flw");
        let flow = FlowField::new(vec![[0.5, -1.0, 2.0]]).unwrap();
        write_flow(&fpath, &flow).unwrap();
        let mut expect = Vec::new();
        expect.extend_from_slice(b"FLW1");
        expect.extend_from_slice(&1u32.to_le_bytes());
        for v in [0.5f32, -1.0, 2.0] {
            expect.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(fs::read(&fpath).unwrap(), expect);

        let gpath = dir.path().join("g.dtg");
        let target = PointCloud::new(vec![[0.5, 0.5, 0.5]]).unwrap();
        let bounds = Aabb {
            min: [0.0; 3],
            max: [1.0; 3],
        };
        let grid = DistanceGrid::build(&target, 0.5, &bounds, 1.0).unwrap();
        write_grid(&gpath, &grid).unwrap();
        let bytes = fs::read(&gpath).unwrap();
        assert_eq!(&bytes[0..4], b"DTG1");
        let dims = grid.dims();
        let header = 4 + 24 + 8 + 12;
        assert_eq!(bytes.len(), header + dims[0] * dims[1] * dims[2] * 4);
        let (o, c, d, v) = read_grid(&gpath).unwrap();
        assert_eq!(o, grid.origin());
        assert_eq!(c, grid.cell());
        assert_eq!(d, grid.dims());
        assert_eq!(v.len(), grid.values().len());
        for (a, b) in v.iter().zip(grid.values()) {
            assert_eq!(*a, *b as f32);
        }
    }
}
